from .cli import SolverCli, main

__all__ = ['SolverCli', 'main']
