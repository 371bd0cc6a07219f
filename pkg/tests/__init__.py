"""Tests for ctmcrand."""
