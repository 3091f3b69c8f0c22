"""kinematics subpackage"""
