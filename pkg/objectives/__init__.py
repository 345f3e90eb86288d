"""Training objectives for unmix"""
