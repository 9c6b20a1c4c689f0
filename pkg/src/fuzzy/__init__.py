"""Fuzzy inference - membership functions, Mamdani and Takagi-Sugeno systems, neuro-fuzzy learning."""
