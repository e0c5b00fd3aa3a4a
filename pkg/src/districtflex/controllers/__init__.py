"""Coordination architectures acting on the district simulation."""
