"""Camera-based certification of spatial entanglement from photon-pair coincidences."""
