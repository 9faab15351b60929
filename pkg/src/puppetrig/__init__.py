"""Simulated dual-arm puppeteer teleoperation stack.

Pub/sub bus with a binary TCP wire format, 7-DoF kinematics, leader-to-follower
retargeting with self-collision gating, a grasp-gesture session state machine,
multi-rate synchronized episode recording, simulated devices, and a CLI with
interaction-point analysis.
"""

__version__ = "0.1.0"
