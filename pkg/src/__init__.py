"""KAR Learner - Source package"""
