# Simulation engines
