"""District-heating design optimization as a mixed-integer linear program."""

__version__ = "0.1.0"
