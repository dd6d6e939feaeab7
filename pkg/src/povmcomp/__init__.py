"""povmcomp: one-shot POVM compression toolkit.

Library layers, bottom up: ``linalg`` (dense Hermitian operations),
``qobjects`` (POVMs, instruments, classical-quantum states), ``sdp``
(dense feasibility engine), ``entropies`` (one-shot entropic quantities),
``splitting`` (rate splitting), ``covering`` (covering experiments and
GOOD-set extraction), ``protocols`` (end-to-end simulators and rate
regions), ``cli`` (batch front door).
"""

__version__ = "0.1.0"
