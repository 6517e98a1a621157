# Data package