"""Core modules for unmix"""
