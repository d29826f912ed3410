"""Online causal discovery benchmark.

Simulates ground-truth Bayesian networks, learns their structure online from
observational plus actively chosen interventional batches, and scores the
learned graphs round by round.  Subpackages:

- ``netio``: BIF network files and variable-description files
- ``graph``: adjacency-matrix graph utilities and belief thresholding
- ``scm``: forward sampling and exact distribution enumeration
- ``enco``: gradient-based structure learner (edge-existence and
  orientation logits over per-node conditional models)
- ``strategies``: intervention targeting strategies
- ``legit``: staged language-model-guided targeting schedule
- ``llm``: chat-completion client, prompt building, answer parsing
- ``metrics``: SHD / SID / BSF against a ground-truth DAG
- ``runner``: multi-seed online discovery loop and result files
- ``service``: HTTP session service for interactive runs
"""

__version__ = "0.1.0"
