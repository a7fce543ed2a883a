# Shared configuration, exceptions and helpers for the Muskat simulator
