"""Privileged-information distillation for whole-slide-image bags.

A dual-branch bag-of-patches model in which pathway-grouped expression
profiles supervise representation learning at training time (the privileged
branch) while inference runs from image features alone (the distilled
branch). Ships with a seeded synthetic-cohort generator, cross-validated
training, survival/classification evaluation with bootstrap confidence
intervals, and attention/attribution interpretability reports.
"""

__version__ = "0.1.0"
