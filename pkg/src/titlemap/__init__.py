"""titlemap: map noisy job titles onto a standard taxonomy.

The pipeline fuses three views of a title (hyperbolic transition-graph
embedding, semantic embedding, syntactic similarity vector) through
multi-aspect co-attention and neural logical reasoning, then classifies over
the taxonomy. See README.md for the CLI workflow.
"""

__version__ = "0.1.0"
