"""Growth-rate analysis for a two-asset (capital, art collection) random linear system."""
