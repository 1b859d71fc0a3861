"""Content characterisation of communities."""
