"""Networks, latent bank and checkpoints for unmix"""
