"""Figures from contend CSV outputs.

These scripts never rerun simulations; they only transform the columns
of the CSVs they are given, and they checksum every input into the
figure metadata so a figure can be traced back to its data.
"""

__version__ = "0.1.0"
