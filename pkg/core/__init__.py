"""
Core bench packages: numerics, environments, datasets, the world model,
evaluation and PNG output.
"""
