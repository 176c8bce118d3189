"""
slipflow 命令行入口
"""
