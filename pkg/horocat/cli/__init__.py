# Command-line module for horocat
"""
Command-line front end dispatching experiments to the core modules
"""
