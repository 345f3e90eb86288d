"""Output modules for unmix"""
