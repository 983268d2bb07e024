"""Surface-code decoding tools: circuit-level sampling, a local 3D
convolutional decoder, syndrome sparsification and global decoders."""
