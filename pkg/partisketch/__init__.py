"""partisketch - partitioned CountMin sketches for graph streams."""
