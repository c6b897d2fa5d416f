"""Test suite for bargebench"""
