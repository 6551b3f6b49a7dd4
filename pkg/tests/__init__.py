"""Tests para qdot_spinpump"""
