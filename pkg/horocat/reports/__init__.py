# Reports module for horocat
"""
Run reports and plot-data export for horocat experiments
"""
