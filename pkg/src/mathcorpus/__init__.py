"""Math pretraining corpus curation toolkit.

Stages: classifier-based web filtering, source-specific selection rules,
LLM-driven extraction of computation steps with Python translations,
sandboxed execution verification, document composition, and
dedup/decontamination against benchmark questions.
"""

__version__ = "0.1.0"
