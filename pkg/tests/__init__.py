"""Tests for fastskip."""
