"""入口模块。"""
