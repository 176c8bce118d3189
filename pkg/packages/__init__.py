"""slipflow 共享库：配置、日志、领域模型与数值求解器。"""
