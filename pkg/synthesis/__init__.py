"""Synthetic sources and mixing for unmix"""
