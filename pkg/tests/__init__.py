"""Test suite for svd-rnd."""
