"""Quantum system learning from classical shadows.

Subpackages cover dense linear algebra (qmat), spin-chain Hamiltonians
(spinsys), stabilizer simulation with depolarizing noise (stabsim),
classical-shadow collection and error bounds (shadows), dataset construction
and serialization (data), a reverse-mode autodiff engine with the attention
models (autodiff, network, training), evaluation and faithfulness reports
(evaluate), and the ``shadowctl`` command line interface (cli).
"""

__version__ = "0.1.0"
