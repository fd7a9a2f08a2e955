"""Dense-network substrate: layers, losses, Adam, gradient checks, checkpoints."""
