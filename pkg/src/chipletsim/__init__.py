"""Collision-limited yield, chiplet assembly and MCM-vs-monolithic comparison
for fixed-frequency transmon devices on heavy-hex lattices."""

__version__ = "0.1.0"
