"""lyapunov subpackage"""
