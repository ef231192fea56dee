"""Monte-Carlo one-hop evaluator and end-to-end network simulator."""
