"""Evaluation metrics for unmix"""
