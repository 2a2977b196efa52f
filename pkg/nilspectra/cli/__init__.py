from .commands import cmd_correlate, cmd_norms, cmd_resonances, cmd_selftest, cmd_verify

__all__ = ["cmd_verify", "cmd_correlate", "cmd_resonances", "cmd_norms", "cmd_selftest"]
