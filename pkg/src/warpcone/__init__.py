"""Expanders from group actions: Voronoi approximating graphs, warped level sets and spectral diagnostics."""
