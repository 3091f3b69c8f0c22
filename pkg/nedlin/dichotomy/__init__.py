"""dichotomy subpackage: certificates, dichotomy test and spectrum scan"""
