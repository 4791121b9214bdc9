"""Test package for proteus."""
