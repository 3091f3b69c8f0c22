"""cli subpackage"""
