"""Result ledgers, JSON echoes, plots and trend checks for benchmark evaluations"""
