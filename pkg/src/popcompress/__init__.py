"""Population-risk effects of model compression, studied numerically."""
