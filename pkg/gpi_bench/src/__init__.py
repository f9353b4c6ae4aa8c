# GPI Bench source package
