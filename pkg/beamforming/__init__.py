# Wideband cell-free multi-RIS beamforming simulator (Django app)
