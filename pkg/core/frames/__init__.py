"""Zak transforms, pre-Gramians and Gabor frame bounds."""
