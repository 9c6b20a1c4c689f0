"""Neural components - feedforward networks and their local-search trainers."""
