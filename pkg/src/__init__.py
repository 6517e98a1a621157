# fluxstoq - stoquastic simulation of coupled flux qubits

__version__ = "0.1.0"
