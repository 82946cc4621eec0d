"""Zero-shot behavior composition over latent hub topologies.

Pipeline: scripted demonstrations on a deterministic grid maze ->
dynamics-aligned latents -> hub topology -> hub-sequence dynamics model ->
per-hub edge policies -> bottleneck-cost plan search -> execution.
"""

__version__ = "0.1.0"
