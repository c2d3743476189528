"""Scene-specific object detection with a generative-discriminative hybrid."""
