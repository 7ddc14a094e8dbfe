"""Phishing-tweet detection: feature extraction, classifiers, evaluation, service."""

__version__ = "0.1.0"
