"""Moderation pipeline for social-VR video recordings.

Detects and categorizes harassment behaviors with a two-stage
vision-language-model classification scheme, plus an evaluation harness,
fine-tuning data exporter, synthetic test-corpus generator, and a
moderator review service.
"""

__version__ = "0.1.0"
