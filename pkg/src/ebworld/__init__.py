"""Energy-based world model over one-hot consumer profiles.

Subpackages: schema (encoding / datasets), rbm, dbm, intervention, cli.
"""

__version__ = "0.1.0"
