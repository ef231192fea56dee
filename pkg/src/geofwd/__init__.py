"""Relay selection for geographic forwarding in sleep-wake cycling sensor networks.

Solvers for the exact-model optimal policy (BF) and the simplified-model
threshold policy (SF), closed-form one-hop averages, and Monte-Carlo
simulators for one hop and for end-to-end delivery.
"""

__version__ = "0.1.0"
