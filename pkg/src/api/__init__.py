# Command layer
