"""Two-channel operator calculus for optimization steps."""
