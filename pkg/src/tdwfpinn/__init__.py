"""Transformed fractional PINNs for diffusion-wave problems."""
