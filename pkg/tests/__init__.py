"""Test suite for the lfiw_debias package."""
