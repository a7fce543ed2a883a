# Numerical library and run orchestration
