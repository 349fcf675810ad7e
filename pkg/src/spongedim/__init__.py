"""Box dimension of self-similar sets and self-affine sponges."""
