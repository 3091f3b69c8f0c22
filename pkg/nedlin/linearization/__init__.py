"""linearization subpackage"""
