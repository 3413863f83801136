"""Monte Carlo random-walk PDE solving on emulated stochastic spintronic hardware.

Modules: ``devices`` (MTJ/FTJ behavioral models and process variation),
``cells`` (neuron/synapse cells and the activation cycle), ``chain`` (the
discrete Markov chain), ``walk`` (parallel walk engine and cost ledger),
``pde`` (problems, estimators and references) and ``cli``.
"""

__version__ = "0.1.0"
