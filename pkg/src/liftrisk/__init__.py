"""Lifting-risk classification from wearable IMU signals.

Pipeline: bandpass-filter the 36 sensor channels, normalize trial length,
scale per channel, wrap each trial into a square 3-channel image, train a
small VGG-style CNN (average pooling, Adam, early stopping), score with
per-class statistics plus the K-category correlation, and attribute
predictions back to sensors with gradient saliency.
"""

__version__ = "0.1.0"
