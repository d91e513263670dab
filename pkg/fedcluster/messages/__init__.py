from .round_output import RoundOutput
