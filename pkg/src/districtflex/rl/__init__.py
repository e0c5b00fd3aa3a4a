"""Learning-based controllers: independent SAC and MAPPO (CTDE)."""
